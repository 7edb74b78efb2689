// Copyright (c) 2026 The hadiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "hadiff/pdb_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

namespace hadiff {

namespace {

const std::array<std::string, 21> kAaCodes = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU",
    "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL", "UNK"};

// Ideal backbone offsets in the frame basis (e1 toward C, e2 completing the
// N-CA-C plane). cos/sin of the 111-degree N-CA-C angle.
constexpr double kCaC = 1.526;
constexpr double kCaN = 1.458;
constexpr double kCosNCaC = -0.35836794954530027;
constexpr double kSinNCaC = 0.93358042649720174;

double parse_coord(const std::string& line, std::size_t start, int line_number) {
  if (line.size() < start + 8)
    throw ParseError("pdb: truncated coordinate field at line " + std::to_string(line_number));
  const std::string field = line.substr(start, 8);
  std::size_t pos = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw ParseError("pdb: malformed coordinate '" + field + "' at line " +
                     std::to_string(line_number));
  }
  for (std::size_t i = pos; i < field.size(); ++i) {
    if (field[i] != ' ')
      throw ParseError("pdb: malformed coordinate '" + field + "' at line " +
                       std::to_string(line_number));
  }
  return value;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(' ');
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(' ');
  return s.substr(b, e - b + 1);
}

}  // namespace

int aa_type_from_code(const std::string& three_letter) {
  for (int i = 0; i < 20; ++i)
    if (kAaCodes[i] == three_letter) return i;
  return 20;
}

const std::string& aa_code_from_type(int type) {
  if (type < 0 || type > 20) return kAaCodes[20];
  return kAaCodes[static_cast<std::size_t>(type)];
}

PdbParseResult parse_pdb_backbone(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("pdb: cannot open " + path);

  struct Partial {
    std::string res_name;
    bool has_n = false, has_ca = false, has_c = false;
    Vec3 n, ca, c;
    int order = 0;
  };
  // residue key: (chain, resSeq, iCode)
  std::map<std::tuple<std::string, int, char>, Partial> residues;
  int order = 0;
  int line_number = 0;
  bool in_first_model = true;
  std::string line;
  while (std::getline(f, line)) {
    ++line_number;
    if (line.rfind("ENDMDL", 0) == 0) break;
    if (line.rfind("MODEL", 0) == 0) {
      if (!in_first_model) break;
      in_first_model = false;
      continue;
    }
    if (line.rfind("ATOM  ", 0) != 0) continue;
    if (line.size() < 54)
      throw ParseError("pdb: short ATOM record at line " + std::to_string(line_number));
    const std::string atom_name = strip(line.substr(12, 4));
    if (atom_name != "N" && atom_name != "CA" && atom_name != "C") continue;
    const char altloc = line[16];
    if (altloc != ' ' && altloc != 'A') continue;
    const std::string res_name = strip(line.substr(17, 3));
    const std::string chain(1, line[21]);
    int res_seq = 0;
    try {
      res_seq = std::stoi(line.substr(22, 4));
    } catch (const std::exception&) {
      throw ParseError("pdb: malformed residue number at line " + std::to_string(line_number));
    }
    const char icode = line[26];
    const Vec3 xyz(parse_coord(line, 30, line_number), parse_coord(line, 38, line_number),
                   parse_coord(line, 46, line_number));

    Partial& p = residues[{chain, res_seq, icode}];
    if (p.order == 0) p.order = ++order;
    p.res_name = res_name;
    if (atom_name == "N") {
      p.n = xyz;
      p.has_n = true;
    } else if (atom_name == "CA") {
      p.ca = xyz;
      p.has_ca = true;
    } else {
      p.c = xyz;
      p.has_c = true;
    }
  }

  std::vector<std::pair<int, BackboneRecord>> ordered;
  int dropped = 0;
  for (const auto& [key, p] : residues) {
    if (!(p.has_n && p.has_ca && p.has_c)) {
      ++dropped;
      continue;
    }
    BackboneRecord r;
    r.chain_id = std::get<0>(key);
    r.residue_seq = std::get<1>(key);
    r.res_name = p.res_name;
    r.n = p.n;
    r.ca = p.ca;
    r.c = p.c;
    ordered.emplace_back(p.order, std::move(r));
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  PdbParseResult out;
  out.dropped_residues = dropped;
  out.records.reserve(ordered.size());
  for (auto& [ord, rec] : ordered) out.records.push_back(std::move(rec));
  if (out.records.empty()) throw ParseError("pdb: no complete backbone residues in " + path);
  return out;
}

ChainState chain_from_records(const std::vector<BackboneRecord>& records) {
  if (records.empty()) throw ParseError("chain_from_records: empty record list");
  ChainState chain;
  chain.chain_id = records.front().chain_id;
  chain.frames.reserve(records.size());
  for (const auto& r : records) {
    chain.frames.push_back(frame_from_backbone(r.n, r.ca, r.c));
    chain.residue_ids.push_back(r.residue_seq);
    chain.aa_types.push_back(aa_type_from_code(r.res_name));
  }
  return chain;
}

std::vector<BackboneRecord> records_from_chain(const ChainState& chain) {
  std::vector<BackboneRecord> out;
  out.reserve(chain.size());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Frame& f = chain.frames[i];
    const Vec3 e1 = f.orientation.col(0);
    const Vec3 e2 = f.orientation.col(1);
    BackboneRecord r;
    r.chain_id = chain.chain_id;
    r.residue_seq = chain.residue_ids[i];
    r.res_name = aa_code_from_type(chain.aa_types[i]);
    r.ca = f.position;
    r.c = f.position + kCaC * e1;
    r.n = f.position + kCaN * (kCosNCaC * e1 + kSinNCaC * e2);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

void write_atom(std::FILE* f, int serial, const char* name, const BackboneRecord& r,
                const Vec3& xyz, const char* element) {
  std::fprintf(f, "ATOM  %5d %-4s%c%-3s %c%4d%c   %8.3f%8.3f%8.3f%6.2f%6.2f          %2s\n",
               serial, name, ' ', r.res_name.c_str(), r.chain_id[0], r.residue_seq, ' ', xyz.x(),
               xyz.y(), xyz.z(), 1.0, 0.0, element);
}

int write_state_atoms(std::FILE* f, const ComplexState& state, int serial) {
  for (const ChainState* chain : {&state.receptor, &state.ligand}) {
    const auto records = records_from_chain(*chain);
    for (const auto& r : records) {
      write_atom(f, serial++, " N", r, r.n, "N");
      write_atom(f, serial++, " CA", r, r.ca, "C");
      write_atom(f, serial++, " C", r, r.c, "C");
    }
    std::fprintf(f, "TER\n");
  }
  return serial;
}

}  // namespace

void write_pdb(const std::string& path, const ComplexState& state) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw ParseError("pdb: cannot open " + path + " for writing");
  write_state_atoms(f, state, 1);
  std::fprintf(f, "END\n");
  std::fclose(f);
}

void write_pdb_trajectory(const std::string& path, const std::vector<ComplexState>& states) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (f == nullptr) throw ParseError("pdb: cannot open " + path + " for writing");
  int model = 1;
  for (const auto& s : states) {
    std::fprintf(f, "MODEL     %4d\n", model++);
    write_state_atoms(f, s, 1);
    std::fprintf(f, "ENDMDL\n");
  }
  std::fprintf(f, "END\n");
  std::fclose(f);
}

ChainState load_chain(const std::string& path) {
  return chain_from_records(parse_pdb_backbone(path).records);
}

ComplexState load_bound_complex(const std::string& path, const std::string& receptor_chain,
                                const std::string& ligand_chain) {
  const PdbParseResult parsed = parse_pdb_backbone(path);
  std::vector<BackboneRecord> rec, lig;
  for (const auto& r : parsed.records) {
    if (r.chain_id == receptor_chain)
      rec.push_back(r);
    else if (r.chain_id == ligand_chain)
      lig.push_back(r);
  }
  if (rec.empty() || lig.empty())
    throw ParseError("pdb: bound complex " + path + " is missing chain " +
                     (rec.empty() ? receptor_chain : ligand_chain));
  ComplexState state;
  state.receptor = chain_from_records(rec);
  state.ligand = chain_from_records(lig);
  state.validate();
  return state;
}

}  // namespace hadiff
