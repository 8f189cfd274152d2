#include "crackgan/cli.hpp"

int main(int argc, char** argv) { return crackgan::run(argc, argv); }
