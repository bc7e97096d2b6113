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

// Regenerates the bundled test corpus: deterministic synthetic scenes
// written as PNG plus a jsonl manifest.

#include <cstdio>

#include "CLI11.hpp"
#include "wmaudit/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"write the synthetic image corpus"};
  std::string out = "data/corpus";
  std::size_t count = 20;
  int size = 256;
  std::uint64_t key = 2026;
  app.add_option("--out", out, "output directory");
  app.add_option("--count", count, "number of images");
  app.add_option("--size", size, "side length in pixels");
  app.add_option("--seed", key, "generator key");
  CLI11_PARSE(app, argc, argv);

  wmaudit::SyntheticOptions opt;
  opt.count = count;
  opt.size = size;
  opt.key = key;
  opt.task = wmaudit::Task::kGeneration;
  wmaudit::save_dataset(wmaudit::make_synthetic_dataset(opt), out);
  std::printf("wrote %zu images of %dx%d to %s\n", count, size, size, out.c_str());
  return 0;
}
