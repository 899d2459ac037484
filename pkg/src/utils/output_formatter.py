class OutputFormatter:
    """Console output for simulation runs, with a tree-like structure.

    Everything except errors is suppressed when ``quiet`` is set, which the
    runner does for tests and for worker processes.
    """

    def __init__(self, quiet: bool = False):
        self.quiet = quiet

    def _emit(self, line: str, **kwargs):
        if not self.quiet:
            print(line, **kwargs)

    def print_header(self, text: str, width: int = 50):
        """Print a header with equal signs."""
        self._emit("\n" + "=" * width)
        self._emit(f"🕒 {text}")
        self._emit("=" * width + "\n")

    def print_section(self, title: str):
        self._emit(f"📚 {title}")
        self._emit("┌─────────────────────────────────────────")

    def print_item(self, text: str):
        self._emit(f"│ • {text}")

    def print_section_end(self):
        self._emit("└─────────────────────────────────────────")

    def print_box_start(self, title: str, width: int = 60):
        """Open the box of one seed; returns the bottom line for ``print_box_end``."""
        header_text = f"─ Running: {title.upper()} "
        top_line = f"┌{header_text}" + "─" * max(0, width - len(header_text) - 1)
        self._emit(f"\n{top_line}")
        return "└" + "─" * (width - 1)

    def print_box_end(self, bottom_line: str):
        self._emit(bottom_line)

    def print_progress(self, t: int, total: int, unemployment: float, n_firms: int, debt: float):
        """Print one progress line of a running seed."""
        width = len(str(total))
        self._emit(
            f"│ │ t={t:>{width}}/{total}  unemployment={unemployment:6.2%}  "
            f"firms={n_firms:>5}  debt={debt:,.0f}",
            flush=True,
        )

    def print_success(self, text: str, level: int = 1):
        self._emit(f"{'│ ' * level}✅ {text}")

    def print_error(self, text: str, level: int = 1):
        """Print error message with X mark. Errors are printed even when quiet."""
        print(f"{'│ ' * level}❌ {text}")

    def print_info(self, text: str, level: int = 1):
        self._emit(f"{'│ ' * level}ℹ️  {text}")

    def print_warning(self, text: str, level: int = 1):
        self._emit(f"{'│ ' * level}⚠️  {text}")

    def print_processing(self, text: str, level: int = 1):
        self._emit(f"{'│ ' * level}⚙️  {text}")

# Create a global instance for easy access
formatter = OutputFormatter()
