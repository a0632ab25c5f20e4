#include "fockcast/io.hpp"

#include "fockcast/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <complex>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fockcast {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "artifact format assumes a little-endian host");

namespace {

std::string to_hex(const unsigned char* digest, unsigned len) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(2 * static_cast<std::size_t>(len), '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = kHex[digest[i] >> 4];
        out[2 * i + 1] = kHex[digest[i] & 0xf];
    }
    return out;
}

std::string array_bytes(const double* values, std::size_t count) {
    std::string bytes(count * sizeof(double), '\0');
    std::memcpy(bytes.data(), values, bytes.size());
    return bytes;
}

nlohmann::json read_sidecar(const fs::path& path, const char* expected_type) {
    const nlohmann::json meta = read_json(fs::path(path.string() + ".json"));
    if (meta.value("dtype", "") != expected_type)
        throw ArtifactError("artifact " + path.string() + " is not of type " + expected_type);
    return meta;
}

void check_digest(const fs::path& path, const nlohmann::json& meta) {
    const std::string actual = sha256_file(path);
    if (actual != meta.value("checksum", ""))
        throw ArtifactError("checksum mismatch for " + path.string());
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("SHA-256 computation failed");
    return to_hex(digest.data(), len);
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

std::string write_array(const fs::path& path, const Eigen::MatrixXd& a) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = a;
    const std::string bytes = array_bytes(rm.data(), static_cast<std::size_t>(rm.size()));
    write_text(path, bytes);
    return sha256_hex(bytes);
}

std::string write_array(const fs::path& path, const Eigen::MatrixXcd& a) {
    const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = a;
    const std::string bytes =
        array_bytes(reinterpret_cast<const double*>(rm.data()), 2 * static_cast<std::size_t>(rm.size()));
    write_text(path, bytes);
    return sha256_hex(bytes);
}

Eigen::MatrixXd read_real_array(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
    const std::string bytes = read_text(path);
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * sizeof(double))
        throw ArtifactError("unexpected size of " + path.string());
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    std::memcpy(rm.data(), bytes.data(), bytes.size());
    return rm;
}

Eigen::MatrixXcd read_complex_array(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
    const std::string bytes = read_text(path);
    if (bytes.size() != static_cast<std::size_t>(rows * cols) * 2 * sizeof(double))
        throw ArtifactError("unexpected size of " + path.string());
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    std::memcpy(rm.data(), bytes.data(), bytes.size());
    return rm;
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ArtifactError("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw ArtifactError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("missing artifact " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_json(const fs::path& path, const nlohmann::json& value) { write_text(path, value.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ArtifactError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void save_real(const fs::path& path, const Eigen::MatrixXd& a, nlohmann::json meta) {
    meta["dtype"] = "float64";
    meta["rows"] = a.rows();
    meta["cols"] = a.cols();
    meta["checksum"] = write_array(path, a);
    write_json(fs::path(path.string() + ".json"), meta);
}

void save_complex(const fs::path& path, const Eigen::MatrixXcd& a, nlohmann::json meta) {
    meta["dtype"] = "complex128";
    meta["rows"] = a.rows();
    meta["cols"] = a.cols();
    meta["checksum"] = write_array(path, a);
    write_json(fs::path(path.string() + ".json"), meta);
}

Eigen::MatrixXd load_real(const fs::path& path) {
    const nlohmann::json meta = read_sidecar(path, "float64");
    check_digest(path, meta);
    return read_real_array(path, meta.at("rows").get<Eigen::Index>(), meta.at("cols").get<Eigen::Index>());
}

Eigen::MatrixXcd load_complex(const fs::path& path) {
    const nlohmann::json meta = read_sidecar(path, "complex128");
    check_digest(path, meta);
    return read_complex_array(path, meta.at("rows").get<Eigen::Index>(), meta.at("cols").get<Eigen::Index>());
}

}  // namespace fockcast
