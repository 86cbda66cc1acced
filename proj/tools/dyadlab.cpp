#include "dyadlab/cli.hpp"

int main(int argc, char** argv) { return dyadlab::run_cli(argc, argv); }
