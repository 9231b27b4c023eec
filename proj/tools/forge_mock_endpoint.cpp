// Standalone mock chat-completion server for trying the enhance stage offline.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "forge/mock_endpoint.hpp"

int main(int argc, char** argv) {
  CLI::App app{"forge-mock-endpoint: canned enhancement server"};
  std::string host = "127.0.0.1", mode = "valid";
  int port = 8089, fail = 2;
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--mode", mode, "valid, three-visual, forbidden, server-error, fail-first, bad-json");
  app.add_option("--fail-count", fail, "failures before success in fail-first mode");
  CLI11_PARSE(app, argc, argv);
  try {
    forge::MockEndpoint server(forge::MockEndpoint::parse_mode(mode), fail);
    std::cerr << "serving on http://" << host << ":" << port << "/v1/chat/completions\n";
    server.serve(host, port);
  } catch (const std::exception& e) {
    std::cerr << "forge-mock-endpoint: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
