#include "coverify/cli.hpp"

int main(int argc, char** argv) { return coverify::run_cli(argc, argv); }
