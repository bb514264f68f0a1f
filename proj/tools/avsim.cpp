#include "avsim_cli.hpp"

int main(int argc, char** argv) { return avsim::cli::run(argc, argv); }
