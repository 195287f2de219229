import logging
import os
import platform

import termstyle

debug_level = 0


def debug(message, level=1):
    """
    Log message when the -d count reaches level.  Deeper levels indent.
    """
    if level <= debug_level:
        logging.debug(' ' * (level - 1) * 2 + message)



class Colors:
    """
    Terminal colors for command reports, looked up by the role of the text
    rather than by color name.
    """

    # role -> termstyle style
    palette = {
        'heading': 'bold',
        'warning': 'yellow',
        'reference': 'blue',
    }


    def __init__(self, termcolor=None):
        """
        termcolor - None autodetects a terminal, True forces colors on and
            False forces them off.
        """
        if termcolor is None:
            termstyle.auto()
            termcolor = bool(termstyle.bold(""))
        self.termcolor = termcolor
        self._apply()


    def _apply(self):
        # termstyle's switch is global, so set it before every use
        if self.termcolor:
            termstyle.enable()
        else:
            termstyle.disable()


    def style(self, role, text):
        if role not in self.palette:
            raise KeyError("no color for role {!r}".format(role))
        self._apply()
        name = self.palette[role]
        if name == 'blue' and platform.system() == 'Windows': # pragma: no cover
            # Default blue in windows is unreadable
            name = 'cyan'
        return getattr(termstyle, name)(text)


    def heading(self, text):
        return self.style('heading', text)


    def warning(self, text):
        return self.style('warning', text)


    def reference(self, text):
        return self.style('reference', text)



class MagStream(object):
    """
    I wrap the stream command reports go to.  On Windows the stream is
    passed through colorama so ansi colors show up.  Besides write() I
    offer writeln(), indented lines and aligned tables.
    """

    indent_spaces = 2

    def __init__(self, stream, override_appveyor=False):
        self.stream = stream
        # AppVeyor doesn't support win32 color calls but interprets ansi codes
        if override_appveyor or (
                (platform.system() == 'Windows')
                and (not os.environ.get('APPVEYOR', False))): # pragma: no cover
            from colorama.initialise import wrap_stream
            self.stream = wrap_stream(self.stream, None, None, None, True)


    def flush(self):
        self.stream.flush()


    def write(self, text):
        if isinstance(text, bytes):
            text = text.decode('utf-8')
        self.stream.write(text)


    def writeln(self, text=''):
        self.write(text + '\n')


    def formatLine(self, line, indent=0, marker=''):
        """
        line indented by indent levels, with marker (if any) taking the
        place of the first indent characters.
        """
        padding = max(indent * self.indent_spaces - len(marker), 0)
        return marker + ' ' * padding + line


    def table(self, header, rows, indent=1, colorize=None):
        """
        Write header and rows as left-aligned columns.  Cells are converted
        with str().  colorize, if given, is called with (row, text) for every
        formatted data line and returns the text to write.
        """
        cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
        for index, row in enumerate(cells):
            text = '  '.join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
            if index and colorize:
                text = colorize(rows[index - 1], text)
            self.writeln(self.formatLine(text, indent))


    def isatty(self):
        return getattr(self.stream, 'isatty', lambda: False)()
