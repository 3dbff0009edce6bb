#include "qmdpnet/cli.hpp"

int main(int argc, char** argv) { return qmdpnet::run_cli(argc, argv); }
