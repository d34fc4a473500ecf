#include "nclp/cli.hpp"

int main(int argc, char** argv) { return nclp::run(argc, argv); }
