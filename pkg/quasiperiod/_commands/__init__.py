from quasiperiod._commands import analyze, factor, gen, plot, verify, zeros

COMMANDS = [zeros, analyze, factor, gen, plot, verify]
