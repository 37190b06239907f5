#include "nusar/cli.hpp"

int main(int argc, char** argv) { return nusar::cli_main(argc, argv); }
