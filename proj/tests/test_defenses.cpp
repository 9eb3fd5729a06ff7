// Copyright 2026 The Demiguise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <set>

#include "demiguise/dataset.hpp"
#include "demiguise/defenses.hpp"
#include "demiguise/errors.hpp"
#include "support.hpp"

using namespace demiguise;
using defenses::DefenseKind;
using defenses::DefenseSpec;
using imaging::ImageTensor;

TEST_CASE("defense specs validate their parameters") {
  CHECK_NOTHROW(DefenseSpec::jpeg(75).validate());
  CHECK_NOTHROW(DefenseSpec::bit_depth(4).validate());
  CHECK_NOTHROW(DefenseSpec::none().validate());
  CHECK_THROWS_AS(DefenseSpec::jpeg(0).validate(), ConfigError);
  CHECK_THROWS_AS(DefenseSpec::jpeg(101).validate(), ConfigError);
  CHECK_THROWS_AS(DefenseSpec::bit_depth(9).validate(), ConfigError);
  CHECK_THROWS_AS((DefenseSpec{DefenseKind::jpeg, 50, 3}).validate(), ConfigError);
  CHECK_THROWS_AS((DefenseSpec{DefenseKind::none, 50, 0}).validate(), ConfigError);
  CHECK(DefenseSpec::parse("jpeg:40") == DefenseSpec::jpeg(40));
  CHECK(DefenseSpec::parse("bit_depth:2") == DefenseSpec::bit_depth(2));
  CHECK(DefenseSpec::parse("none") == DefenseSpec::none());
  CHECK_THROWS_AS(DefenseSpec::parse("jpeg"), ConfigError);
  CHECK_THROWS_AS(DefenseSpec::parse("jpeg:4x"), ConfigError);
  CHECK_THROWS_AS(DefenseSpec::parse("median:3"), ConfigError);
}

TEST_CASE("the sweep covers seven qualities and seven depths") {
  const auto specs = defenses::defense_sweep_specs();
  REQUIRE(specs.size() == 14);
  const std::vector<int> q{100, 85, 70, 55, 40, 25, 10};
  for (int i = 0; i < 7; ++i) CHECK(specs[i] == DefenseSpec::jpeg(q[i]));
  for (int i = 0; i < 7; ++i) CHECK(specs[7 + i] == DefenseSpec::bit_depth(7 - i));
  for (const auto& s : specs) CHECK_NOTHROW(s.validate());
}

TEST_CASE("bit-depth reduction") {
  std::mt19937_64 rng(80);
  const ImageTensor x = testing::random_image({3, 16, 16}, rng);
  const ImageTensor one = defenses::apply_defense(DefenseSpec::bit_depth(1), x);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK((one[i] == 0.0 || one[i] == 1.0));
  const ImageTensor eight = defenses::apply_defense(DefenseSpec::bit_depth(8), x);
  CHECK((eight.tensor() - x.tensor()).linf_norm() <= 1.0 / 510 + 1e-15);
  for (int b = 1; b <= 8; ++b) {
    const ImageTensor once = defenses::apply_defense(DefenseSpec::bit_depth(b), x);
    CHECK(defenses::apply_defense(DefenseSpec::bit_depth(b), once) == once);
    std::set<double> levels(once.tensor().storage().begin(), once.tensor().storage().end());
    CHECK(levels.size() <= (1u << b));
  }
}

TEST_CASE("jpeg round trip") {
  const auto images = dataset::generate_split(dataset::kDefaultSeed, "test", 20);
  double worst = 1e9;
  for (const auto& s : images) {
    const ImageTensor y = defenses::apply_defense(DefenseSpec::jpeg(100), s.image);
    CHECK(y.shape() == s.image.shape());
    worst = std::min(worst, imaging::psnr(s.image, y));
    CHECK(defenses::apply_defense(DefenseSpec::jpeg(100), s.image) == y);
  }
  CHECK(worst >= 38.0);
  // Lower quality loses more.
  const ImageTensor& x = images.front().image;
  CHECK(imaging::psnr(x, defenses::apply_defense(DefenseSpec::jpeg(10), x)) <
        imaging::psnr(x, defenses::apply_defense(DefenseSpec::jpeg(90), x)));
  CHECK(defenses::apply_defense(DefenseSpec::none(), x) == x);
  const ImageTensor gray = ImageTensor::constant({1, 8, 8}, 0.5);
  CHECK(defenses::apply_defense(DefenseSpec::jpeg(50), gray).shape() == gray.shape());
}
