#include "dagdiff/cli.hpp"

int main(int argc, char** argv) {
    return dagdiff::cli::run_main(argc, argv);
}
