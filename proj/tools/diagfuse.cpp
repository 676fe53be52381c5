#include "diagfuse/cli.hpp"
#include "diagfuse/parallel.hpp"

int main(int argc, char** argv) {
  diagfuse::tune_allocator();
  return diagfuse::cli::run(argc, argv);
}
