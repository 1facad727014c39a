// Scratch directories and whole-tree byte comparison for file-level tests.
#ifndef SPG_TESTS_FS_UTIL_HPP_
#define SPG_TESTS_FS_UTIL_HPP_

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

namespace spg::testing {

namespace fs = std::filesystem;

// Fresh empty directory under the system temp dir.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "spg_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline std::vector<uint8_t> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_bytes(const fs::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

// Relative path -> contents for every regular file below root.
inline std::map<std::string, std::vector<uint8_t>> tree_bytes(const fs::path& root) {
  std::map<std::string, std::vector<uint8_t>> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = file_bytes(e.path());
  return out;
}

}  // namespace spg::testing

#endif  // SPG_TESTS_FS_UTIL_HPP_
