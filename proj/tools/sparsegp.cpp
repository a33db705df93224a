#include <string>
#include <vector>

#include "sparsegp/cli.hpp"

int main(int argc, char** argv) {
  return sparsegp::cli::run(std::vector<std::string>(argv, argv + argc));
}
