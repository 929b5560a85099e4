#include "charflow/cli.hpp"

int main(int argc, char** argv) { return charflow::cli_main(argc, argv); }
