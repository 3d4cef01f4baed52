#include <vector>

#include "labeldist/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return labeldist::run_cli(args);
}
