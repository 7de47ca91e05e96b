#include <vector>

#include "harvestgame/cliapp.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return harvestgame::cli::run(args);
}
