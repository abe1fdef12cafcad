#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>

#include "pgee/model.hpp"

namespace pgee {

// Long-format CSV: header `cluster,y,<covariate>...`. A covariate column
// named `t` is also kept as the cluster's time vector. The intercept is
// synthesized and never appears in the file.

RawTable parse_csv(std::istream& in);
RawTable parse_csv(std::string_view text);

LongitudinalDataset read_dataset_csv(const std::filesystem::path& path);

/// Writes the covariate columns (not the intercept) with 17 significant digits.
void write_dataset_csv(std::ostream& out, const LongitudinalDataset& data);
void write_dataset_csv(const std::filesystem::path& path, const LongitudinalDataset& data);

}  // namespace pgee
