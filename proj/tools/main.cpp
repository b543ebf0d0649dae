#include "cli.hpp"

int main(int argc, char** argv) { return fuzzyseg::cli::run_cli(argc, argv); }
