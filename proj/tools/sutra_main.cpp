#include "sutra/cli.hpp"

int main(int argc, char** argv) { return sutra::cli::run(argc, argv); }
