from bgslab.main import main

raise SystemExit(main())
