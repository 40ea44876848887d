#include <string>
#include <vector>

#include "xrsel/cli.hpp"

int main(int argc, char** argv)
{
    return xrsel::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
