#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "majutsu/scene.hpp"

namespace majutsu::edit {

using scene::Json;
using scene::SceneDocument;

struct AddCmd {
  std::string asset_ref;
  std::optional<scene::Category> category;  // defaults to the asset's category
  geometry::SimilarityPlacement placement;
  std::string id;                           // empty: assigned as inst_r<revision>
  scene::Overrides overrides;
  friend bool operator==(const AddCmd&, const AddCmd&) = default;
};

struct DeleteCmd {
  std::string instance_id;
  friend bool operator==(const DeleteCmd&, const DeleteCmd&) = default;
};

/// Attribute patch; a disengaged value erases an override key.
using Patch = std::map<std::string, std::optional<std::string>>;

struct EditCmd {
  std::string instance_id;
  Patch patch;
  friend bool operator==(const EditCmd&, const EditCmd&) = default;
};

struct MoveCmd {
  std::string instance_id;
  Vec3 d_translation;
  double d_yaw = 0.0;
  double d_scale = 1.0;
  friend bool operator==(const MoveCmd&, const MoveCmd&) = default;
};

struct ReplaceTarget {
  std::optional<scene::LayerKind> layer;
  std::string instance_id;
  std::string surface;  // instance material slot; empty = whole instance
  friend bool operator==(const ReplaceTarget&, const ReplaceTarget&) = default;
};

struct ReplaceCmd {
  ReplaceTarget target;
  std::string material_id;
  friend bool operator==(const ReplaceCmd&, const ReplaceCmd&) = default;
};

using EditCommand = std::variant<AddCmd, DeleteCmd, EditCmd, MoveCmd, ReplaceCmd>;

std::string_view op_name(const EditCommand& cmd);

/// Text grammar:
///   add <asset_ref> at (x,y) [yaw r] [scale s]
///   delete <id>
///   edit <id> set <key>=<value>[, <key>=<value>]...
///   move <id> by (dx,dy[,dz]) [rotate r] [scale s]
///   replace <layer|id>[.<surface>] with <material_id>
/// Input starting with '{' is read as the JSON form. Failures throw
/// ParseError with detail "<offset>:<expected>".
EditCommand parse_command(std::string_view text);

Json command_to_json(const EditCommand& cmd);
EditCommand command_from_json(const Json& j);
/// Grammar text for a command (JSON-only details such as overrides on Add are dropped).
std::string command_to_text(const EditCommand& cmd);

/// Keys an Edit patch may carry besides `material.<slot>`.
inline constexpr std::string_view kPlacementKeys[] = {
    "placement.tx", "placement.ty", "placement.tz", "placement.yaw", "placement.xy_scale",
    "placement.z_scale"};

struct ApplyResult {
  SceneDocument doc;
  EditCommand applied;  // with assigned ids filled in
  EditCommand inverse;
  std::vector<std::string> warnings;
};

ApplyResult execute(const SceneDocument& doc, const EditCommand& cmd);
SceneDocument apply_command(const SceneDocument& doc, const EditCommand& cmd,
                            std::vector<std::string>* warnings = nullptr);
SceneDocument undo(const SceneDocument& doc);
SceneDocument redo(const SceneDocument& doc);

/// Folds an edit log over a freshly assembled document.
SceneDocument replay(const SceneDocument& base, const std::vector<scene::EditRecord>& log);

}  // namespace majutsu::edit
