// File formats: sample CSV input, moment-matrix / certificate / report JSON,
// report and approximant CSV. Floats are written with 17 significant digits.

#ifndef CDK_IO_HPP
#define CDK_IO_HPP

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cdk/bounds.hpp"
#include "cdk/measures.hpp"
#include "cdk/pipeline.hpp"

namespace cdk::io {

/// Malformed input file; row is 1-based counting the header, 0 when not applicable.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t row) : std::runtime_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// Header `x1,...,xn,y`, one sample per row.
SampleSet read_samples_csv(std::istream& in);
SampleSet read_samples_csv(const std::filesystem::path& path);

nlohmann::ordered_json moment_matrix_to_json(const MomentMatrix& m);
/// Reads the serialized form back; the result has no square-root factor.
MomentMatrix moment_matrix_from_json(const nlohmann::json& j);

nlohmann::ordered_json certificate_to_json(const DegreeCertificate& cert);

std::string report_csv(const ErrorReport& report);
nlohmann::ordered_json report_to_json(const ErrorReport& report);
std::string approximant_csv(const std::vector<ApproximantRecord>& records);

/// Serializes JSON with 17 significant digits per float.
std::string dump(const nlohmann::ordered_json& j, int indent = 2);

std::string format_double(double v);

/// Writes to a sibling temporary file and renames it over the target.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace cdk::io

#endif  // CDK_IO_HPP
