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

#pragma once

#include <cstddef>
#include <string>

#include "wmaudit/dataset.hpp"
#include "wmaudit/image.hpp"
#include "wmaudit/rng.hpp"

namespace wmaudit {

// Procedural photo-like images: smooth two-colour gradient, low-frequency
// shading, a handful of soft-edged shapes and fine texture. Used for the
// bundled corpus and for desk-scale scenario datasets.

struct SyntheticImage {
  Image image;
  std::string caption;
};

/// `style` >= 0 biases the palette and shape mix towards class `style`.
SyntheticImage synthetic_image(Key key, int width, int height, int style = -1);

struct SyntheticOptions {
  std::size_t count = 100;
  int size = 64;
  int classes = 3;
  Task task = Task::kGeneration;
  Key key = 0;
};

/// Records "img_00000"... with image refs "images/<id>.png". Classification
/// datasets cycle labels so classes stay balanced.
Dataset make_synthetic_dataset(const SyntheticOptions& options);

/// I.i.d. uniform noise image, for null-distribution experiments.
Image noise_image(Key key, int width, int height, int channels = 3);

}  // namespace wmaudit
