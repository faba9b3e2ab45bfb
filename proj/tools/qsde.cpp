#include "qsde/cli.hpp"

int main(int argc, char** argv) { return qsde::cli::run_cli(argc, argv); }
