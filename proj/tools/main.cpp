#include "planefield/cli.hpp"

int main(int argc, char** argv) {
  planefield::tune_allocator();
  return planefield::run(argc, argv);
}
