#include "klv/cli.hpp"

int main(int argc, char** argv) { return klv::cli::run(argc, argv); }
