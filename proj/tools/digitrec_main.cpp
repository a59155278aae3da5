#include "digitrec/cli.hpp"

int main(int argc, char** argv) { return digitrec::run_cli(argc, argv); }
