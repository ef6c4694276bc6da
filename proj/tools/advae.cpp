#include "advae/cli.hpp"

int main(int argc, char** argv) { return advae::cli::run_cli(argc, argv); }
