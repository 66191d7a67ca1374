// Serial CPU emulation of the CUDA kernel execution model.
//
// Kernels compile as ordinary functions. CUDA_LAUNCH runs the body once per
// (block, thread) pair: blocks outer, threads inner, x fastest. Device
// memory is host memory. No barriers, shared memory or warp semantics.
#ifndef COVERIFY_CUDA_SHIM_H
#define COVERIFY_CUDA_SHIM_H

#define COVERIFY_CUDA_SHIM_VERSION 1

#include <math.h>
#include <stdlib.h>
#include <string.h>

#include <cstddef>
#include <type_traits>
#include <utility>

#define __global__
#define __device__
#define __host__
#define __constant__
#define __forceinline__ inline
#define __noinline__
#define __launch_bounds__(...)

struct uint3 {
  unsigned int x, y, z;
};

struct dim3 {
  unsigned int x, y, z;
  constexpr dim3(unsigned int vx = 1, unsigned int vy = 1, unsigned int vz = 1)
      : x(vx), y(vy), z(vz) {}
  constexpr dim3(uint3 v) : x(v.x), y(v.y), z(v.z) {}
  constexpr operator uint3() const { return uint3{x, y, z}; }
};

inline uint3 threadIdx = {0, 0, 0};
inline uint3 blockIdx = {0, 0, 0};
inline dim3 blockDim = {1, 1, 1};
inline dim3 gridDim = {1, 1, 1};
inline constexpr int warpSize = 32;

namespace coverify_shim {

template <class K, class... A>
void launch(K kernel, dim3 grid, dim3 block, A&&... args) {
  gridDim = grid;
  blockDim = block;
  for (unsigned bz = 0; bz < grid.z; ++bz)
    for (unsigned by = 0; by < grid.y; ++by)
      for (unsigned bx = 0; bx < grid.x; ++bx)
        for (unsigned tz = 0; tz < block.z; ++tz)
          for (unsigned ty = 0; ty < block.y; ++ty)
            for (unsigned tx = 0; tx < block.x; ++tx) {
              blockIdx = {bx, by, bz};
              threadIdx = {tx, ty, tz};
              kernel(args...);
            }
  blockIdx = {0, 0, 0};
  threadIdx = {0, 0, 0};
}

}  // namespace coverify_shim

#define CUDA_LAUNCH(kernel, grid, block, ...) \
  ::coverify_shim::launch(kernel, dim3(grid), dim3(block) __VA_OPT__(, ) __VA_ARGS__)

// Launch syntax applied to a function without __global__.
#define CUDA_LAUNCH_HOST(kernel, grid, block, ...) \
  static_assert(sizeof(&kernel) == 0, "a host function call cannot be configured: " #kernel)

enum cudaError_t {
  cudaSuccess = 0,
  cudaErrorInvalidValue = 1,
  cudaErrorMemoryAllocation = 2,
};
typedef cudaError_t cudaError;

enum cudaMemcpyKind {
  cudaMemcpyHostToHost = 0,
  cudaMemcpyHostToDevice = 1,
  cudaMemcpyDeviceToHost = 2,
  cudaMemcpyDeviceToDevice = 3,
  cudaMemcpyDefault = 4,
};

typedef void* cudaStream_t;
typedef void* cudaEvent_t;

inline cudaError_t cudaMalloc(void** ptr, std::size_t size) {
  *ptr = calloc(1, size ? size : 1);
  return *ptr ? cudaSuccess : cudaErrorMemoryAllocation;
}

template <class T>
cudaError_t cudaMalloc(T** ptr, std::size_t size) {
  return cudaMalloc(reinterpret_cast<void**>(ptr), size);
}

template <class T>
cudaError_t cudaMallocManaged(T** ptr, std::size_t size, unsigned = 0) {
  return cudaMalloc(reinterpret_cast<void**>(ptr), size);
}

inline cudaError_t cudaMemcpy(void* dst, const void* src, std::size_t count, cudaMemcpyKind) {
  if (count) memmove(dst, src, count);
  return cudaSuccess;
}

inline cudaError_t cudaMemcpyAsync(void* dst, const void* src, std::size_t count,
                                   cudaMemcpyKind kind, cudaStream_t = nullptr) {
  return cudaMemcpy(dst, src, count, kind);
}

inline cudaError_t cudaMemset(void* dst, int value, std::size_t count) {
  if (count) memset(dst, value, count);
  return cudaSuccess;
}

inline cudaError_t cudaFree(void* ptr) {
  free(ptr);
  return cudaSuccess;
}

inline cudaError_t cudaDeviceSynchronize() { return cudaSuccess; }
inline cudaError_t cudaThreadSynchronize() { return cudaSuccess; }
inline cudaError_t cudaGetLastError() { return cudaSuccess; }
inline cudaError_t cudaPeekAtLastError() { return cudaSuccess; }
inline cudaError_t cudaDeviceReset() { return cudaSuccess; }
inline cudaError_t cudaSetDevice(int) { return cudaSuccess; }
inline cudaError_t cudaStreamCreate(cudaStream_t* s) { *s = nullptr; return cudaSuccess; }
inline cudaError_t cudaStreamDestroy(cudaStream_t) { return cudaSuccess; }
inline cudaError_t cudaStreamSynchronize(cudaStream_t) { return cudaSuccess; }
inline const char* cudaGetErrorString(cudaError_t e) {
  return e == cudaSuccess ? "no error" : "shim error";
}

// Atomics (serial).
template <class T, class V>
T atomicAdd(T* addr, V val) {
  T old = *addr;
  *addr = static_cast<T>(old + val);
  return old;
}

template <class T, class V>
T atomicSub(T* addr, V val) {
  T old = *addr;
  *addr = static_cast<T>(old - val);
  return old;
}

template <class T, class V>
T atomicExch(T* addr, V val) {
  T old = *addr;
  *addr = static_cast<T>(val);
  return old;
}

template <class T, class V>
T atomicMax(T* addr, V val) {
  T old = *addr;
  if (static_cast<T>(val) > old) *addr = static_cast<T>(val);
  return old;
}

template <class T, class V>
T atomicMin(T* addr, V val) {
  T old = *addr;
  if (static_cast<T>(val) < old) *addr = static_cast<T>(val);
  return old;
}

template <class T, class C, class V>
T atomicCAS(T* addr, C compare, V val) {
  T old = *addr;
  if (old == static_cast<T>(compare)) *addr = static_cast<T>(val);
  return old;
}

template <class T, class V>
T atomicAnd(T* addr, V val) {
  T old = *addr;
  *addr = old & val;
  return old;
}

template <class T, class V>
T atomicOr(T* addr, V val) {
  T old = *addr;
  *addr = old | val;
  return old;
}

inline unsigned int atomicInc(unsigned int* addr, unsigned int limit) {
  unsigned int old = *addr;
  *addr = old >= limit ? 0 : old + 1;
  return old;
}

template <class A, class B>
inline std::common_type_t<A, B> min(A a, B b) {
  return b < a ? b : a;
}

template <class A, class B>
inline std::common_type_t<A, B> max(A a, B b) {
  return a < b ? b : a;
}

inline float __expf(float x) { return expf(x); }
inline float __logf(float x) { return logf(x); }
inline float __sinf(float x) { return sinf(x); }
inline float __cosf(float x) { return cosf(x); }
inline float __powf(float x, float y) { return powf(x, y); }
inline float __fdividef(float x, float y) { return x / y; }
inline float __saturatef(float x) { return x < 0.f ? 0.f : (x > 1.f ? 1.f : x); }
inline float rsqrtf(float x) { return 1.0f / sqrtf(x); }
inline double rsqrt(double x) { return 1.0 / sqrt(x); }
inline float __fmul_rn(float a, float b) { return a * b; }
inline float __fadd_rn(float a, float b) { return a + b; }
inline double __dmul_rn(double a, double b) { return a * b; }
inline double __dadd_rn(double a, double b) { return a + b; }
inline int __float2int_rn(float x) { return static_cast<int>(nearbyintf(x)); }
inline int __float2int_rz(float x) { return static_cast<int>(x); }
inline float __int2float_rn(int x) { return static_cast<float>(x); }
inline int __mul24(int a, int b) { return a * b; }
inline unsigned int __umul24(unsigned int a, unsigned int b) { return a * b; }

#endif
