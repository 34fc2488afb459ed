#include <string>
#include <vector>

#include "transferlab/cli.hpp"

int main(int argc, char** argv) {
  return transferlab::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
