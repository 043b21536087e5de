#include "fsisens/cli.hpp"

int main(int argc, char** argv) { return fsisens::cli::main_entry(argc, argv); }
