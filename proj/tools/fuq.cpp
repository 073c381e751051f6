#include "fuq/cli.hpp"

int main(int argc, char** argv) { return fuq::cli::cli_main(argc, argv); }
