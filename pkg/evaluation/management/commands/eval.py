from django.conf import settings
from django.core.management.base import CommandError

from detangle.commands import DetangleCommand, write_json
from evaluation.documents import pair_documents, write_curve
from evaluation.report import generate_report
from evaluation.scores import evaluate_dataset


class Command(DetangleCommand):
    help = 'Score predicted persons against ground truth: forward/backward instance and part IoU.'

    def add_arguments(self, parser):
        parser.add_argument('--pred', required=True, help='parse.json, or a directory of per-image directories')
        parser.add_argument('--gt', required=True, help='gt.json, or a directory of per-image directories')
        parser.add_argument('--out', default='report.json')
        parser.add_argument('--curve', help='CSV of threshold,forward,backward')
        parser.add_argument('--pdf', help='PDF rendering of the report')
        parser.add_argument('--threads', type=int)

    def handle(self, *args, **options):
        pairs = pair_documents(options['pred'], options['gt'])
        if not pairs:
            raise CommandError("no image has both a prediction and a ground truth")
        for name, pred, gt in pairs:
            if any(person.shape not in (None, (gt.height, gt.width)) for person in pred):
                raise CommandError(f"{name}: prediction and ground truth dimensions differ")
        threads = options['threads'] or settings.THREADS
        report = evaluate_dataset([(pred, gt) for _, pred, gt in pairs], threads=threads)

        write_json(options['out'], report.to_dict())
        if options['curve']:
            write_curve(options['curve'], report)
        if options['pdf']:
            generate_report(str(options['pdf']), report)
        self.stdout.write(f"forward {report.forward:.4f} backward {report.backward:.4f} "
                          f"over {report.images} image(s)")
