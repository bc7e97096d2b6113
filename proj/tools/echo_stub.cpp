// Copyright 2026 The wmaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal protocol adapter used for conformance tests. It "trains" by
// counting records and answers queries with deterministic placeholders.
//
// Fault flags:
//   --version N       answer the handshake with version N
//   --caps a,b        advertise these capabilities (default classify,generate)
//   --die-on-train    SIGKILL itself when asked to train
//   --hang-on-train   never answer the train request
//   --garbage-on-train  reply with a non-JSON line

#include <signal.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "wmaudit/dataset.hpp"
#include "wmaudit/image.hpp"

using nlohmann::json;

namespace {

void reply(const json& j) {
  std::cout << j.dump() << '\n' << std::flush;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wire-protocol echo stub"};
  int version = 1;
  std::string caps_arg = "classify,generate";
  bool die_on_train = false, hang_on_train = false, garbage_on_train = false;
  app.add_option("--version", version, "protocol version to announce");
  app.add_option("--caps", caps_arg, "comma-separated capabilities");
  app.add_flag("--die-on-train", die_on_train);
  app.add_flag("--hang-on-train", hang_on_train);
  app.add_flag("--garbage-on-train", garbage_on_train);
  CLI11_PARSE(app, argc, argv);

  json caps = json::array();
  {
    std::stringstream ss(caps_arg);
    for (std::string c; std::getline(ss, c, ',');) {
      if (!c.empty()) caps.push_back(c);
    }
  }

  int class_count = 0;
  bool trained = false;
  std::string line;
  while (std::getline(std::cin, line)) {
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::parse_error&) {
      reply({{"type", "error"}, {"message", "malformed request"}});
      return 2;
    }
    const std::string type = msg.value("type", "");
    if (type == "hello") {
      reply({{"type", "hello"}, {"version", version}, {"caps", caps}});
    } else if (type == "train") {
      if (die_on_train) ::kill(::getpid(), SIGKILL);
      if (hang_on_train) {
        for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
      }
      if (garbage_on_train) {
        std::cout << "not json at all\n" << std::flush;
        continue;
      }
      try {
        const auto m = wmaudit::load_dataset(msg.at("dataset_dir").get<std::string>(),
                                             wmaudit::DatasetFormat::kJsonl);
        class_count = m.class_count.value_or(0);
      } catch (const std::exception& e) {
        reply({{"type", "error"}, {"message", e.what()}});
        return 2;
      }
      trained = true;
      reply({{"type", "trained"}});
    } else if (type == "query_logits" || type == "query_images") {
      if (!trained) {
        reply({{"type", "error"}, {"message", "query before train"}});
        return 2;
      }
      if (type == "query_logits") {
        json rows = json::array();
        for (const auto& p : msg.at("images")) {
          const auto img = wmaudit::read_png(p.get<std::string>());
          double mean = 0.0;
          for (double v : img.data()) mean += v;
          mean /= static_cast<double>(img.size());
          json row = json::array();
          for (int k = 0; k < std::max(class_count, 1); ++k) row.push_back(std::cos(mean * (k + 1)));
          rows.push_back(row);
        }
        reply({{"type", "logits"}, {"values", rows}});
      } else {
        const std::string out_dir = msg.at("out_dir").get<std::string>();
        json paths = json::array();
        std::size_t i = 0;
        for (const auto& p : msg.at("prompts")) {
          const double shade = static_cast<double>(p.get<std::string>().size() % 17) / 16.0;
          wmaudit::Image img(16, 16, 3, shade);
          const std::string path = out_dir + "/gen_" + std::to_string(i++) + ".png";
          wmaudit::write_png(img, path);
          paths.push_back(path);
        }
        reply({{"type", "images"}, {"paths", paths}});
      }
    } else if (type == "shutdown") {
      return 0;
    } else {
      reply({{"type", "error"}, {"message", "unknown request '" + type + "'"}});
      return 2;
    }
  }
  return 0;
}
