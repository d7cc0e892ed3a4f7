#include "jointqa/cli.hpp"

int main(int argc, char** argv) { return jointqa::cli::run_cli(argc, argv); }
