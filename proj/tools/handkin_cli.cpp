#include "handkin/cli.hpp"

int main(int argc, char** argv) { return handkin::run_cli(argc, argv); }
