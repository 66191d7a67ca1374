#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "coverify/gateway.hpp"

namespace coverify {

namespace {

constexpr const char* kTranslateSystem =
    "You are an expert in translating {source_lang} programs to {target_lang} programs. "
    "Given the {source_lang} program by User, translate it to {target_lang}. Ensure that the "
    "{target_lang} program is exactly the same as the {source_lang} program input and output, "
    "and that the semantics of the original code are preserved. Just generate the "
    "{target_lang} program and remove any unnecessary comments. Surround the generated "
    "{target_lang} program in [{target_lang}] and [/{target_lang}].";

constexpr const char* kTranslateOneShotCToCuda = R"(C Code:
void add_100(int numElements, int *data) {
    for (int idx = 0; idx < numElements; idx++) {
        data[idx] += 100;
    }
}

CUDA Code:
__global__ void add_100(int numElements, int *data) {
    int idx = blockIdx.x * blockDim.x + threadIdx.x;
    if (idx < numElements) {
        data[idx] += 100;
    }
}

Your task is to write a equivalent CUDA kernel function for the following C function:

C Code:

{source_code}

CUDA Code:
)";

constexpr const char* kTranslateOneShotCudaToC = R"(CUDA Code:
__global__ void add_100(int numElements, int *data) {
    int idx = blockIdx.x * blockDim.x + threadIdx.x;
    if (idx < numElements) {
        data[idx] += 100;
    }
}

C Code:
void add_100(int numElements, int *data) {
    for (int idx = 0; idx < numElements; idx++) {
        data[idx] += 100;
    }
}

Your task is to write a equivalent C function for the following CUDA kernel function:

CUDA Code:

{source_code}

C Code:
)";

constexpr const char* kTestsSystem =
    "Your task is to write 5 valid inputs to run the {source_lang} function that performs a "
    "specific calculation. You must write the comment \"//Input case n:\" on a separate line "
    "directly above, where n represents the input case number, starting from 1 and increasing "
    "by one for each subsequent input case.";

constexpr const char* kTestsOneShot = R"(Code:
void add_100(int numElements, int *data) {
    for (int idx = 0; idx < numElements; idx++) {
        data[idx] += 100;
    }
}

[INPUTS]

//Input case 1:
int data1[] = {0};
add_100(1, data1);

//Input case 2:
int data2[] = {-100};
add_100(1, data2);

//Input case 3:
int data3[] = {1, 2, 3};
add_100(3, data3);

//Input case 4:
int data4[] = {INT_MAX - 100};
add_100(1, data4);

//Input case 5:
int data5[] = {-50, 0, 50};
add_100(3, data5);
[/INPUTS]

Code:
{source_code}
)";

constexpr const char* kWrapperUser = R"(Please help me wrap this CUDA kernel to allow user to call it like a C++ function. The wrapper function should:

1. **Keep the input and output parameters and their orders as same the as the original CUDA kernel.**
2. Call the CUDA kernel provided by user inside the wrapper function.
3. The generated code must be in the [CODE] and [/CODE] tags.

Here are examples for you:

CUDA Code:

[CODE]
__global__ void add_100_kernel(int numElements, int* data) {
    int idx = blockIdx.x * blockDim.x + threadIdx.x;
    if (idx < numElements) {
        data[idx] += 100;
    }
}
[/CODE]

CUDA Code Wrapper:

[CODE]
void add_100_cuda_invoke_in_cpp(int numElements, int* data) {
    int* d_data;
    cudaMalloc((void**)&d_data, numElements * sizeof(int));
    cudaMemcpy(d_data, data, numElements * sizeof(int), cudaMemcpyHostToDevice);
    add_100_kernel<<<numElements, 1>>>(numElements, d_data);
    cudaMemcpy(data, d_data, numElements * sizeof(int), cudaMemcpyDeviceToHost);
    cudaFree(d_data);
}
[/CODE]

Your task is to write a wrapper function for the following cuda kernel function, **The generated code must be in the [CODE] and [/CODE] tags**:

CUDA Code:

[CODE]
{source_code}

[/CODE]

CUDA Code Wrapper:
)";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

std::optional<std::string> read_if_exists(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string template_stem(const PromptTemplate& t) {
  std::string stem = std::string(to_string(t.task)) + "." + std::string(to_string(t.mode));
  if (t.direction) stem += "." + std::string(to_string(*t.direction));
  return stem;
}

}  // namespace

void PromptTemplate::validate() const {
  if (task == Task::Translate && !direction)
    throw ConfigError("translate prompt template requires a direction");
  if (body.find("{source_code}") == std::string::npos)
    throw ConfigError("prompt template " + template_stem(*this) + " lacks {source_code}");
}

PromptLibrary::PromptLibrary() {
  for (auto dir : {Direction::C_to_CUDA, Direction::CUDA_to_C}) {
    templates_.push_back({Task::Translate, PromptMode::TaskPrompt, dir, kTranslateSystem,
                          "{source_code}"});
    templates_.push_back({Task::Translate, PromptMode::OneShot, dir, kTranslateSystem,
                          dir == Direction::C_to_CUDA ? kTranslateOneShotCToCuda
                                                      : kTranslateOneShotCudaToC});
  }
  templates_.push_back(
      {Task::GenTests, PromptMode::TaskPrompt, std::nullopt, kTestsSystem, "{source_code}"});
  templates_.push_back(
      {Task::GenTests, PromptMode::OneShot, std::nullopt, kTestsSystem, kTestsOneShot});
  templates_.push_back({Task::GenWrapper, PromptMode::TaskPrompt, std::nullopt, "", kWrapperUser});
  templates_.push_back({Task::GenWrapper, PromptMode::OneShot, std::nullopt, "", kWrapperUser});
}

void PromptLibrary::load_overrides(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw ConfigError("prompt directory not found: " + dir.string());
  for (auto& t : templates_) {
    auto stem = template_stem(t);
    if (auto s = read_if_exists(dir / (stem + ".system.txt"))) {
      t.system = *s;
      spdlog::info("prompt override: {}.system", stem);
    }
    if (auto u = read_if_exists(dir / (stem + ".user.txt"))) {
      t.body = *u;
      spdlog::info("prompt override: {}.user", stem);
    }
    t.validate();
  }
}

const PromptTemplate& PromptLibrary::get(Task task, PromptMode mode,
                                         std::optional<Direction> direction) const {
  if (task != Task::Translate) direction.reset();
  for (const auto& t : templates_)
    if (t.task == task && t.mode == mode && t.direction == direction) return t;
  throw ConfigError("no prompt template for " + std::string(to_string(task)) + "/" +
                    std::string(to_string(mode)));
}

std::vector<ChatMessage> PromptLibrary::render(Task task, PromptMode mode, const FunctionUnit& fn,
                                               std::optional<Direction> direction,
                                               int n_tests) const {
  const auto& t = get(task, mode, direction);
  Language src = fn.language;
  Language dst = src == Language::C ? Language::CUDA : Language::C;
  if (task == Task::Translate) {
    src = source_language(*direction);
    dst = target_language(*direction);
  }
  bool counts_tests = t.system.find("{n_tests}") != std::string::npos ||
                      t.body.find("{n_tests}") != std::string::npos;
  if (task == Task::GenTests && !counts_tests && n_tests != 5)
    throw ConfigError("gen_tests template has a fixed count of 5 but n_tests=" +
                      std::to_string(n_tests));

  auto fill = [&](std::string s) {
    replace_all(s, "{source_lang}", display_name(src));
    replace_all(s, "{target_lang}", display_name(dst));
    replace_all(s, "{n_tests}", std::to_string(n_tests));
    replace_all(s, "{source_code}", fn.source);
    return s;
  };
  std::vector<ChatMessage> msgs;
  if (!t.system.empty()) msgs.push_back({"system", fill(t.system)});
  msgs.push_back({"user", fill(t.body)});
  return msgs;
}

}  // namespace coverify
