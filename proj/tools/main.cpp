#include "sizepop/cli.hpp"

int main(int argc, char** argv) { return sizepop::cli::main(argc, argv); }
