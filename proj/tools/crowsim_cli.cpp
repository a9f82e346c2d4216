#include "crowsim/experiment.hpp"

int main(int argc, char** argv) {
    return crowsim::run_cli(argc, argv);
}
