#include "labelforge/error.hpp"

namespace labelforge {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MissingRequiredField: return "MissingRequiredField";
    case ErrorCode::InvalidTimestamp: return "InvalidTimestamp";
    case ErrorCode::InvalidField: return "InvalidField";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownApp: return "UnknownApp";
    case ErrorCode::NoSnapshotBefore: return "NoSnapshotBefore";
    case ErrorCode::UnknownLabelString: return "UnknownLabelString";
    case ErrorCode::DuplicateAppId: return "DuplicateAppId";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::MissingSnapshot: return "MissingSnapshot";
    case ErrorCode::EmptyDatasetAfterFilter: return "EmptyDatasetAfterFilter";
    case ErrorCode::NoQualifyingApps: return "NoQualifyingApps";
    case ErrorCode::InvalidStrategy: return "InvalidStrategy";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::AllRefreshesFailed: return "AllRefreshesFailed";
    case ErrorCode::SchemaKindMismatch: return "SchemaKindMismatch";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::EmptyNode: return "EmptyNode";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::QuotaExhausted: return "QuotaExhausted";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::StaleAfterPolling: return "StaleAfterPolling";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::InvalidReplayScript: return "InvalidReplayScript";
  }
  return "Unknown";
}

}  // namespace labelforge
