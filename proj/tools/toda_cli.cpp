#include "toda/cli_support.hpp"

int main(int argc, char** argv) {
  return toda::cli::main_impl({argv + 1, argv + argc});
}
