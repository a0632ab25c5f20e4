#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace fockcast {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
/// Lowercase hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

/// Writes a little-endian float64 row-major array and returns its SHA-256.
std::string write_array(const std::filesystem::path& path, const Eigen::MatrixXd& a);
/// Writes interleaved (re, im) complex128 values, row-major.
std::string write_array(const std::filesystem::path& path, const Eigen::MatrixXcd& a);

/// Reads an array written by write_array. Throws ArtifactError on a size
/// mismatch or a missing file.
Eigen::MatrixXd read_real_array(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);
Eigen::MatrixXcd read_complex_array(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);

/// Writes a file atomically through a temporary sibling.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json(const std::filesystem::path& path);

/// Float64 array with a JSON sidecar at "<path>.json" carrying shape and
/// checksum plus caller metadata.
void save_real(const std::filesystem::path& path, const Eigen::MatrixXd& a, nlohmann::json meta = {});
void save_complex(const std::filesystem::path& path, const Eigen::MatrixXcd& a, nlohmann::json meta = {});
/// Loads an array saved with save_real/save_complex and verifies its checksum.
Eigen::MatrixXd load_real(const std::filesystem::path& path);
Eigen::MatrixXcd load_complex(const std::filesystem::path& path);

}  // namespace fockcast
