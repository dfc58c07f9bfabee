#include <vector>

#include "heavytouch/cli.hpp"

int main(int argc, char** argv) {
  return heavytouch::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
