
from reportlab.lib.pagesizes import landscape, A4
from reportlab.pdfgen import canvas
from reportlab.lib.colors import HexColor

from semantics.models import BODY_PARTS


def _plot_curve(pdf_canvas, report, left, bottom, size, colors):
    # axes
    pdf_canvas.setStrokeColor(HexColor(colors['gray_dark']))
    pdf_canvas.setLineWidth(1)
    pdf_canvas.line(left, bottom, left + size, bottom)
    pdf_canvas.line(left, bottom, left, bottom + size)
    pdf_canvas.setFont("Helvetica", 9)
    pdf_canvas.setFillColor(HexColor(colors['gray_light']))
    for tick in (0.0, 0.5, 1.0):
        pdf_canvas.drawCentredString(left + tick * size, bottom - 14, f"{tick:.1f}")
        pdf_canvas.drawRightString(left - 6, bottom + tick * size - 3, f"{tick:.1f}")
    pdf_canvas.drawCentredString(left + size / 2, bottom - 30, "IoU threshold")

    for column, color in ((1, colors['indigo']), (2, colors['gray_dark'])):
        points = [(left + point[0] * size, bottom + point[column] * size) for point in report.curve]
        pdf_canvas.setStrokeColor(HexColor(color))
        pdf_canvas.setLineWidth(2)
        for start, end in zip(points, points[1:]):
            pdf_canvas.line(*start, *end)

    # legend
    for row, (label, color) in enumerate((("forward", colors['indigo']), ("backward", colors['gray_dark']))):
        y = bottom + size - 12 - 16 * row
        pdf_canvas.setStrokeColor(HexColor(color))
        pdf_canvas.line(left + size - 90, y + 3, left + size - 70, y + 3)
        pdf_canvas.setFillColor(HexColor(color))
        pdf_canvas.drawString(left + size - 64, y, label)


def generate_report(destination, report, title="Evaluation report"):
    """Score table and forward/backward threshold curves on one landscape A4 page."""
    pdf_canvas = canvas.Canvas(destination, pagesize=landscape(A4))
    width, height = landscape(A4)

    colors = {'indigo': "#4f46e5", 'gray_dark': "#374151", 'gray_light': "#6b7280"}

    # --- Border ---
    margin = 30
    pdf_canvas.setStrokeColor(HexColor(colors['indigo']))
    pdf_canvas.setLineWidth(2)
    pdf_canvas.rect(margin, margin, width - 2 * margin, height - 2 * margin)

    # --- Title ---
    pdf_canvas.setFont("Times-Bold", 32)
    pdf_canvas.setFillColor(HexColor(colors['gray_dark']))
    pdf_canvas.drawCentredString(width / 2, height - 85, title)
    pdf_canvas.setFont("Times-Italic", 14)
    pdf_canvas.setFillColor(HexColor(colors['gray_light']))
    pdf_canvas.drawCentredString(width / 2, height - 110, f"{report.images} image(s)")

    line_width = 300
    pdf_canvas.setStrokeColor(HexColor(colors['indigo']))
    pdf_canvas.line((width / 2) - (line_width / 2), height - 122, (width / 2) + (line_width / 2), height - 122)

    # --- Score table ---
    rows = [("", "Forward", "Backward"),
            ("Instance IoU", report.forward, report.backward),
            ("Part IoU", report.part_forward, report.part_backward)]
    rows += [(part.label.capitalize(), *report.per_part[part]) for part in BODY_PARTS]
    left, top = 80, height - 170
    for index, row in enumerate(rows):
        y = top - 26 * index
        pdf_canvas.setFont("Helvetica-Bold" if index < 3 else "Helvetica", 13)
        pdf_canvas.setFillColor(HexColor(colors['indigo'] if index == 0 else colors['gray_dark']))
        pdf_canvas.drawString(left, y, row[0])
        for column, value in enumerate(row[1:], start=1):
            text = value if isinstance(value, str) else f"{100 * value:.2f}%"
            pdf_canvas.drawRightString(left + 130 + 110 * column, y, text)

    # --- Curve ---
    _plot_curve(pdf_canvas, report, width / 2 + 80, 110, 300, colors)

    pdf_canvas.showPage()
    pdf_canvas.save()
