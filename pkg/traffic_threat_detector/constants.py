# Exit codes
EXIT_SUCCESS = 0
EXIT_USAGE_ERROR = 1
EXIT_DATA_ERROR = 2
EXIT_INTERNAL_ERROR = 3

# Environment
ENV_CONFIG_PATH = "TTD_CONFIG"
ENV_DATA_DIR = "TTD_DATA_DIR"
DEFAULT_DATA_DIR = "artifacts"
DEFAULT_SEED = 42

# Traffic classes, in index order (Normal first, then attacks by sample count)
CLASS_NAMES = (
    "Normal",
    "DDoS_UDP",
    "DDoS_ICMP",
    "SQL_injection",
    "Password",
    "Vulnerability_scanner",
    "DDoS_TCP",
    "DDoS_HTTP",
    "Uploading",
    "Backdoor",
    "Port_Scanning",
    "XSS",
    "Ransomware",
    "MITM",
    "Fingerprinting",
)
NUM_CLASSES = len(CLASS_NAMES)
DEFAULT_LABEL_COLUMN = "Attack_type"

# Ingest
MISSING_VALUE = "0"
DEFAULT_TRAIN_RATIO = 0.8
DEFAULT_EXCLUDED_COLUMNS = (
    "frame.time",
    "ip.src_host",
    "ip.dst_host",
    "arp.src.proto_ipv4",
    "arp.dst.proto_ipv4",
    "http.request.full_uri",
    "tcp.payload",
    "http.file_data",
)
PCAP_MAGIC_MICRO = 0xA1B2C3D4
PCAP_MAGIC_NANO = 0xA1B23C4D

# Dataset download
DOWNLOAD_RETRY_ATTEMPTS = 5
DOWNLOAD_RETRY_TIMEOUT = 300
DOWNLOAD_RETRY_WAIT_FIXED = 5
DOWNLOAD_TIMEOUT = 60
DOWNLOAD_CHUNK_SIZE = 1 << 20

# PPFLE hashing
CELL_SEPARATOR = "$"
DEFAULT_HASH_ALGORITHM = "sha256"
MIN_TRUNCATION = 8
CORPUS_FILENAME = "corpus.txt"
LABELS_FILENAME = "labels.txt"

# Tokenizer
SPECIAL_TOKENS = ("<s>", "<pad>", "</s>", "<unk>", "<mask>")
BOS_ID = 0
PAD_ID = 1
EOS_ID = 2
UNK_ID = 3
MASK_ID = 4
WORD_CACHE_SIZE = 1 << 18  # encoded words kept per tokenizer
DEFAULT_VOCAB_SIZE = 5000
DEFAULT_MIN_FREQUENCY = 2
DEFAULT_MAX_LEN = 512
DEFAULT_CHUNK_SIZE = 5000
VOCAB_FILENAME = "vocab.json"
MERGES_FILENAME = "merges.txt"
MERGES_HEADER = "#version: 0.2"

# Model
DEFAULT_HIDDEN = 128
DEFAULT_LAYERS = 2
DEFAULT_HEADS = 4
DEFAULT_INTERMEDIATE = 512
DEFAULT_MAX_POSITION = 512
DEFAULT_TYPE_VOCAB = 2
DEFAULT_DROPOUT = 0.1
INIT_STD = 0.02
LAYER_NORM_EPS = 1e-12
MASK_BIAS = -1e9
CHECKPOINT_FORMAT_VERSION = "1"
CHECKPOINT_FILENAME = "model.safetensors"

# Training
DEFAULT_EPOCHS = 4
DEFAULT_BATCH_SIZE = 128
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_OPTIMIZER = "adamw"
DEFAULT_EVAL_EVERY = 0  # steps; 0 evaluates once per epoch
HISTORY_FILENAME = "history.csv"

# Evaluation
DEFAULT_BENCH_RUNS = 1000
DEFAULT_BENCH_WARMUP = 10
MIN_ALPHA_TAIL = 5
REPORT_FILENAME = "report.txt"
REPORT_DATA_FILENAME = "report.yaml"
CONFUSION_FILENAME = "confusion.csv"
ROC_FILENAME = "roc.csv"
SPECTRUM_FILENAME = "spectrum.csv"
ESD_HISTOGRAM_FILENAME = "esd_histogram.csv"
LATENCY_FILENAME = "latency.yaml"
