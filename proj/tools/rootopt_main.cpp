#include "rootopt/cli.hpp"

int main(int argc, char** argv) { return rootopt::cli::run(argc, argv); }
