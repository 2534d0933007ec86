#include "twohand/cli.hpp"

int main(int argc, char** argv)
{
    return twohand::cli(argc, argv);
}
