#include "polyvox/io.hpp"

#include <chrono>
#include <functional>
#include <thread>

#include "polyvox/rng.hpp"

namespace polyvox {

void atomic_write_file(const std::filesystem::path& path,
                       const std::function<void(BinaryWriter&)>& fill) {
  namespace fs = std::filesystem;
  auto dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);

  uint64_t tag = hash_combine(
      uint64_t(std::hash<std::thread::id>{}(std::this_thread::get_id())),
      uint64_t(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(tag);

  {
    BinaryWriter w(tmp);
    fill(w);
    w.flush();
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("atomic rename failed for " + path.string() + ": " + ec.message());
  }
}

}  // namespace polyvox
