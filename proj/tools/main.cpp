#include "apnn/harness.hpp"

int main(int argc, char** argv) { return apnn::run_cli(argc, argv); }
