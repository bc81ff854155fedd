#include "fetch.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include <curl/curl.h>
#include <openssl/evp.h>
#include <zlib.h>

#include "mondeq/errors.hpp"

namespace mondeq::tools {

namespace {

std::string hex(const unsigned char* data, unsigned int len) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 0xF]);
  }
  return out;
}

std::size_t write_to_stream(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  auto* out = static_cast<std::ofstream*>(user);
  out->write(ptr, static_cast<std::streamsize>(size * nmemb));
  return *out ? size * nmemb : 0;
}

void download(const std::string& url, const std::filesystem::path& dest) {
  std::ofstream out(dest, std::ios::binary);
  if (!out) throw NumericalError("cannot write " + dest.string());
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw NumericalError("curl initialization failed");
  curl_easy_setopt(curl.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEFUNCTION, write_to_stream);
  curl_easy_setopt(curl.get(), CURLOPT_WRITEDATA, &out);
  const CURLcode rc = curl_easy_perform(curl.get());
  if (rc != CURLE_OK) {
    throw NumericalError("download of " + url + " failed: " + curl_easy_strerror(rc));
  }
}

void gunzip(const std::filesystem::path& src, const std::filesystem::path& dest) {
  std::unique_ptr<gzFile_s, decltype(&gzclose)> in(gzopen(src.c_str(), "rb"), gzclose);
  if (!in) throw FormatError("cannot open " + src.string());
  std::ofstream out(dest, std::ios::binary);
  if (!out) throw FormatError("cannot write " + dest.string());
  std::array<char, 1 << 16> buf{};
  int got = 0;
  while ((got = gzread(in.get(), buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
    out.write(buf.data(), got);
  }
  if (got < 0) throw FormatError("corrupt gzip stream in " + src.string());
}

}  // namespace

const std::vector<MnistFile>& mnist_files() {
  static const std::vector<MnistFile> kFiles = {
      {"train-images-idx3-ubyte", "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db"},
      {"train-labels-idx1-ubyte", "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5"},
      {"t10k-images-idx3-ubyte", "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7"},
      {"t10k-labels-idx1-ubyte", "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2"},
  };
  return kFiles;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 initialization failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  return hex(digest.data(), len);
}

void verify_mnist(const std::filesystem::path& dir) {
  for (const auto& f : mnist_files()) {
    const auto path = dir / f.name;
    if (!std::filesystem::exists(path)) throw FormatError("missing " + path.string());
    const std::string got = sha256_file(path);
    if (got != f.sha256) {
      throw FormatError("checksum mismatch for " + path.string() + ": " + got);
    }
  }
}

void fetch_mnist(const std::filesystem::path& dir, const std::string& mirror) {
  std::filesystem::create_directories(dir);
  struct CurlGlobal {
    CurlGlobal() { curl_global_init(CURL_GLOBAL_DEFAULT); }
    ~CurlGlobal() { curl_global_cleanup(); }
  } curl_global;
  for (const auto& f : mnist_files()) {
    const auto path = dir / f.name;
    if (std::filesystem::exists(path) && sha256_file(path) == f.sha256) {
      std::cout << f.name << ": present\n";
      continue;
    }
    const auto gz = dir / (f.name + ".gz");
    std::cout << f.name << ": downloading\n";
    download(mirror + f.name + ".gz", gz);
    gunzip(gz, path);
    std::filesystem::remove(gz);
    const std::string got = sha256_file(path);
    if (got != f.sha256) throw FormatError("checksum mismatch for " + path.string() + ": " + got);
  }
}

}  // namespace mondeq::tools
