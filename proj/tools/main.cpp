#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cnlm"));
  return cnlm::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
