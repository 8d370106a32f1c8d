/*
 * Copyright 2026 The tk Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tk/timebase.hpp"

namespace tk::testing {

// Dataset with one slice per entry of `lengths`; slices are separated by a
// gap of 10 steps. `value(global_row, component)` fills the cells.
inline std::shared_ptr<timebase::TimeSeriesDataset> make_series(
    const std::vector<std::size_t>& lengths, const std::vector<std::string>& names,
    const std::function<double(std::size_t, std::size_t)>& value) {
  auto ds = std::make_shared<timebase::TimeSeriesDataset>();
  ds->name = "series";
  ds->delta = 60;
  for (const auto& n : names) ds->components.push_back({n, timebase::ComponentRole::Both});
  std::size_t global = 0;
  tk::Timestamp ts = 1'600'000'000;
  for (std::size_t len : lengths) {
    timebase::Slice s;
    s.start_ts = ts;
    s.values = Matrix(len, names.size());
    s.synthetic.assign(len, false);
    for (std::size_t r = 0; r < len; ++r, ++global) {
      for (std::size_t c = 0; c < names.size(); ++c) s.values(r, c) = value(global, c);
    }
    ds->slices.push_back(std::move(s));
    ts += static_cast<tk::Timestamp>(len + 10) * ds->delta;
  }
  return ds;
}

inline timebase::TaskSpec simple_task(int first, int last, std::vector<std::string> in,
                                      std::vector<std::string> out) {
  timebase::TaskSpec t;
  t.in_delays = {first, last};
  t.in_components = std::move(in);
  t.out_delays = {0, 0};
  t.out_components = std::move(out);
  return t;
}

}  // namespace tk::testing
