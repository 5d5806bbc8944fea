#pragma once

#include <string>
#include <vector>

namespace mtwae {

/// Ensemble listing written next to the member files; paths are relative
/// to the manifest's directory.
struct Manifest {
  std::string kind;  // "fields" or "bdts"
  std::string dir;
  struct Entry {
    std::string name;
    std::string path;
    int label = -1;  // ground-truth class, -1 when unknown
  };
  std::vector<Entry> members;

  std::string resolve(const Entry& e) const;
  bool has_labels() const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const Manifest& m);

/// Runs one subcommand. args excludes the program name. Returns the exit
/// code: 0 ok, 2 input error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace mtwae
