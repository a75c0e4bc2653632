#include "adp/cli.hpp"

int main(int argc, char** argv) { return adp::run_cli(argc, argv); }
