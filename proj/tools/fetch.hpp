#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mondeq::tools {

struct MnistFile {
  std::string name;    // uncompressed file name
  std::string sha256;  // digest of the uncompressed file
};

const std::vector<MnistFile>& mnist_files();

inline constexpr const char* kDefaultMirror = "https://ossci-datasets.s3.amazonaws.com/mnist/";

// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

// Downloads <mirror><name>.gz for every file, inflates it into `dir`, and
// verifies the digest. Files already present with the right digest are kept.
void fetch_mnist(const std::filesystem::path& dir, const std::string& mirror);

// Throws FormatError naming the first missing or corrupt file.
void verify_mnist(const std::filesystem::path& dir);

}  // namespace mondeq::tools
