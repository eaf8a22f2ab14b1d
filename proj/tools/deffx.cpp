#include "deffx/cli/experiment.hpp"

int main(int argc, char** argv) { return deffx::cli::run(argc, argv); }
