#include "ctphase/organs.hpp"

#include <fstream>
#include <sstream>

#include "ctphase/errors.hpp"

namespace ctphase {

int organ_index(std::string_view name) {
  for (int i = 0; i < kNumOrgans; ++i) {
    if (kOrganNames[i] == name) return i;
  }
  return -1;
}

OrganCoding::OrganCoding() { labels_.fill(-1); }

OrganCoding OrganCoding::canonical() {
  OrganCoding coding;
  for (int i = 0; i < kNumOrgans; ++i) coding.labels_[i] = i + 1;
  return coding;
}

OrganCoding OrganCoding::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open organ coding file '" + path + "'");
  OrganCoding coding;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string name;
    long label = 0;
    if (!(fields >> name)) continue;  // blank line
    if (!(fields >> label)) {
      throw DataError("organ coding '" + path + "' line " + std::to_string(line_no) +
                      ": expected 'organ_name label'");
    }
    const int idx = organ_index(name);
    if (idx < 0) {
      throw DataError("organ coding '" + path + "' line " + std::to_string(line_no) +
                      ": unknown organ '" + name + "'");
    }
    coding.labels_[idx] = static_cast<int>(label);
  }
  return coding;
}

void OrganCoding::to_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write organ coding file '" + path + "'");
  out << "# organ_name label\n";
  for (int i = 0; i < kNumOrgans; ++i) {
    out << kOrganNames[i] << ' ' << labels_[i] << '\n';
  }
}

int OrganCoding::label_for(int organ_idx) const { return labels_[organ_idx]; }

void OrganCoding::set(int organ_idx, int label) { labels_[organ_idx] = label; }

bool OrganCoding::has(int organ_idx) const { return labels_[organ_idx] >= 0; }

void OrganCoding::require_complete() const {
  for (int i = 0; i < kNumOrgans; ++i) {
    if (labels_[i] < 0) {
      throw DataError("organ coding is missing '" + std::string(kOrganNames[i]) + "'");
    }
  }
}

}  // namespace ctphase
