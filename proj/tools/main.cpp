#include "hsdrive/cli.hpp"

int main(int argc, char** argv) { return hsd::run_cli(argc, argv); }
