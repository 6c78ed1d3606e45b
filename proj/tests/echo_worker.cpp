// Stand-in worker for the protocol tests. The first argument picks a behavior:
//   ok [loss]     answer every request with a fixed loss (default 0.5)
//   quad          loss = (x - 0.3)^2 + 0.1 * (1 - resource), x from params
//   crash         exit on the first request
//   badid         answer with the wrong id
//   malformed     answer with a line that is not JSON
//   nan           answer with a null loss
//   error         answer with status "error"
//   slow          never answer
//   nohandshake   never send the handshake
//   badhandshake  send a handshake with an unknown protocol

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";
  const double fixed = argc > 2 ? std::atof(argv[2]) : 0.5;
  std::ios::sync_with_stdio(false);

  if (mode == "nohandshake") {
    std::this_thread::sleep_for(std::chrono::seconds(30));
    return 0;
  }
  if (mode == "badhandshake") {
    std::cout << R"({"protocol":9,"max_concurrency":1})" << std::endl;
    return 0;
  }
  std::cout << R"({"protocol":1,"max_concurrency":1})" << std::endl;

  std::string line;
  while (std::getline(std::cin, line)) {
    const auto request = nlohmann::json::parse(line);
    const auto id = request.at("id").get<std::uint64_t>();
    nlohmann::json reply = {{"id", id}, {"status", "ok"}};
    if (mode == "crash") return 3;
    if (mode == "slow") {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      return 0;
    }
    if (mode == "malformed") {
      std::cout << "loss=0.5" << std::endl;
      continue;
    }
    if (mode == "badid") {
      reply["id"] = id + 1;
      reply["loss"] = fixed;
    } else if (mode == "nan") {
      reply["loss"] = nullptr;
    } else if (mode == "error") {
      reply["status"] = "error";
      reply["message"] = "bad params for " + request.at("model").get<std::string>();
    } else if (mode == "quad") {
      const double x = request.at("params").value("x", 0.0);
      const double r = request.at("resource").get<double>();
      reply["loss"] = (x - 0.3) * (x - 0.3) + 0.1 * (1.0 - r);
    } else {
      reply["loss"] = fixed;
    }
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
