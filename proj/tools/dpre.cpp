#include "dpre/cli.hpp"

int main(int argc, char** argv) { return dpre::cli::main(argc, argv); }
