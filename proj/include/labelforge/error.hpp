#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace labelforge {

enum class ErrorCode {
  // report_model
  MalformedJson,
  MissingRequiredField,
  InvalidTimestamp,
  InvalidField,
  // store
  IoError,
  UnknownApp,
  NoSnapshotBefore,
  UnknownLabelString,
  DuplicateAppId,
  EmptyManifest,
  InvalidManifest,
  // metrics
  MissingPrediction,
  MissingSnapshot,
  EmptyDatasetAfterFilter,
  NoQualifyingApps,
  // strategies / threshold search
  InvalidStrategy,
  InvalidArgument,
  EmptyDataset,
  AllRefreshesFailed,
  // features
  SchemaKindMismatch,
  EmptySelection,
  InvalidSchema,
  // forest
  EmptyNode,
  EmptyTrainingSet,
  SchemaMismatch,
  TooFewSamples,
  EmptyGrid,
  InvalidModel,
  // vt_client
  QuotaExhausted,
  Unauthorized,
  NotFound,
  TransportError,
  StaleAfterPolling,
  // report_service
  BindError,
  InvalidReplayScript,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every domain failure in the library is reported through this type; callers
/// branch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace labelforge
