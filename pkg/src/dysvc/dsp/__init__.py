from .f0 import convert_f0, estimate_f0, f0_stats
from .io import load_features, read_wav, save_features, wav_duration, write_wav
from .mel import mel_filterbank, mel_from_spectrogram, mel_spectrogram, mel_to_linear
from .stft import get_window, istft, stft
from .types import F0Stats, F0Track, MelConfig, MelSpectrogram, Spectrogram, Waveform
from .vocoder import griffin_lim, phase_vocoder, spectral_convergence, time_stretch

__all__ = [
    "F0Stats",
    "F0Track",
    "MelConfig",
    "MelSpectrogram",
    "Spectrogram",
    "Waveform",
    "convert_f0",
    "estimate_f0",
    "f0_stats",
    "get_window",
    "griffin_lim",
    "istft",
    "load_features",
    "mel_filterbank",
    "mel_from_spectrogram",
    "mel_spectrogram",
    "mel_to_linear",
    "phase_vocoder",
    "read_wav",
    "save_features",
    "spectral_convergence",
    "stft",
    "time_stretch",
    "wav_duration",
    "write_wav",
]
