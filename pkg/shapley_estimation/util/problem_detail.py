"""
Simple helper library for describing problems to the operator of the command line.

Modeled on problem detail documents (http://datatracker.ietf.org/doc/draft-ietf-appsawg-http-problem/),
with the HTTP status replaced by a process exit status.
"""
import json


class ProblemDetail:
    """A common type of problem."""
    ##### Public Interface / Magic Methods ###################################  # noqa: E266

    def __init__(self, uri, exit_status=None, title=None, detail=None, debug_message=None):
        self.uri = uri
        self.title = title
        self.exit_status = exit_status
        self.detail = detail
        self.debug_message = debug_message

    def __repr__(self):
        return "<ProblemDetail %s: %s>" % (self.uri, self.message)

    def detailed(self, detail, exit_status=None, title=None, debug_message=None):
        """Create a ProblemDetail for a more specific occurrence of an existing ProblemDetail."""
        return ProblemDetail(
            self.uri,
            exit_status or self.exit_status,
            title or self.title,
            detail,
            debug_message
        )

    def with_debug(self, debug_message):
        """
        Insert debugging information into a ProblemDetail.

        The message shown on standard error is unchanged; the debugging information only appears
        in the problem document.
        """
        return ProblemDetail(self.uri, self.exit_status, self.title, self.detail, debug_message)

    ##### Properties and Getters/Setters #####################################  # noqa: E266

    @property
    def message(self):
        """One line suitable for standard error."""
        if self.detail:
            return "%s: %s" % (self.title, self.detail)
        return str(self.title)

    @property
    def document(self):
        """The JSON problem document."""
        document = dict(type=self.uri, title=str(self.title), exit_status=self.exit_status or 1)
        if self.detail:
            document['detail'] = str(self.detail)
        if self.debug_message:
            document['debug_message'] = self.debug_message
        return json.dumps(document)
