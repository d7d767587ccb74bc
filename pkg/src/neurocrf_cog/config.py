import os

from dotenv import load_dotenv

load_dotenv()

# Training hyperparameters
LEARNING_RATE = float(os.getenv("LEARNING_RATE", "0.5"))
REGULARIZATION = float(os.getenv("REGULARIZATION", "0.001"))
MAX_SGD_EXAMPLES = int(os.getenv("MAX_SGD_EXAMPLES", "1000"))
INIT_STDDEV = float(os.getenv("INIT_STDDEV", "0.00015"))
MINIBATCH = int(os.getenv("MINIBATCH", "5"))
RNG_SEED = int(os.getenv("RNG_SEED", "0"))

# OCR word experiments (benchmark_ocr)
OCR_DATA_PATH = os.getenv("OCR_DATA_PATH", "letter.data")
OCR_TRAIN_RATIO = float(os.getenv("OCR_TRAIN_RATIO", str(2 / 3)))
NONSELF_COUNT = int(os.getenv("NONSELF_COUNT", "100"))

# Session experiments (benchmark_sessions)
EVENT_LOG_PATH = os.getenv("EVENT_LOG_PATH", "events.csv")
SESSION_GAP_SECONDS = int(os.getenv("SESSION_GAP_SECONDS", "3600"))
MIN_SESSION_LEN = int(os.getenv("MIN_SESSION_LEN", "4"))
MAX_SESSION_LEN = int(os.getenv("MAX_SESSION_LEN", "6"))
NGRAM_CAP = int(os.getenv("NGRAM_CAP", "100"))
SESSION_TRAIN_FRACTION = float(os.getenv("SESSION_TRAIN_FRACTION", "0.9"))
MIN_USER_SEQUENCES = int(os.getenv("MIN_USER_SEQUENCES", "5"))

# Hour-of-day / day-of-week features are read in this zone
TIMEZONE = os.getenv("TIMEZONE", "UTC")

# Benchmark harness
ITERATIONS = int(os.getenv("ITERATIONS", "5"))
WORKERS = int(os.getenv("WORKERS", "4"))
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "results")

# Other
LOGGING_LEVEL = os.getenv("LOGGING_LEVEL", "DEBUG").upper()
UNKNOWN_LABEL = "<unk>"
RESULTS_COLUMNS = [
    "model_id",
    "architecture",
    "frr",
    "far",
    "accuracy",
    "r_square",
    "token_accuracy",
    "f_score",
]
