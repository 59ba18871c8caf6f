export { ByteReader, crc32, TruncatedData, UnsafeInteger } from "./binary";
export {
  CirDataset,
  CirRecord,
  CorruptPayload,
  readCird,
  VersionMismatch,
} from "./dataset";
export {
  AntennaRef,
  FingerprintBatch,
  FingerprintSample,
  parseSidecar,
  readFpsd,
  Sidecar,
  sidecarSchema,
} from "./fingerprint";
export {
  alignUnit,
  argmaxLowestTie,
  buildImage,
  complexMagnitudes,
  FrameRow,
  ImageOptions,
  InputImage,
  PreprocessError,
} from "./preprocess";
export {
  AssembledTimestamp,
  decodeMessage,
  DecodeOutcome,
  MalformedMessage,
  ScanResult,
  scanCapture,
  SCHEMA_VERSION,
  StreamMessage,
  TimestampAssembler,
  tryDecodeMessage,
} from "./stream";
export {
  buildModel,
  DEFAULT_SHAPE,
  expectedParamCount,
  infer,
  inferBatch,
  ModelShape,
  modelShape,
} from "./model";
export {
  DEFAULT_LEARNING_RATE,
  LabeledSample,
  ShapeMismatch,
  train,
  TrainOptions,
  TrainResult,
} from "./train";
export {
  CheckpointMeta,
  loadCheckpoint,
  readCheckpointMeta,
  saveCheckpoint,
} from "./checkpoint";
export { ensureBackend } from "./backend";
export {
  Estimate,
  InferenceHost,
  serveCapture,
  ServeReport,
} from "./host";
